# Generated by Django 5.2.8 on 2026-10-17 09:12

import uuid
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('scenario', models.CharField(max_length=255)),
                ('subcommand', models.CharField(max_length=32)),
                ('schedule_id', models.CharField(blank=True, default='', max_length=255)),
                ('seed', models.IntegerField(default=0)),
                ('digest', models.CharField(blank=True, default='', max_length=64)),
                ('status', models.CharField(choices=[('ok', 'Ok'), ('violation', 'Violation'), ('error', 'Error')], default='ok', max_length=16)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
